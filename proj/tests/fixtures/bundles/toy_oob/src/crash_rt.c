#define _GNU_SOURCE
#include "crash_rt.h"

#include <dlfcn.h>
#include <execinfo.h>
#include <signal.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <unistd.h>

#define MAX_FRAMES 32
#define MAX_LIVE 64

struct live_alloc {
    void *ptr;
    size_t size;
    int nframes;
    void *frames[MAX_FRAMES];
};

static struct live_alloc live[MAX_LIVE];

static void put(const char *s)
{
    ssize_t ignored = write(STDERR_FILENO, s, strlen(s));
    (void)ignored;
}

static int skip_frame(const char *name)
{
    return strncmp(name, "crash_rt_", 9) == 0 || strncmp(name, "__libc", 6) == 0 ||
           strcmp(name, "_start") == 0;
}

/* Only frames inside the program image carry useful names. */
static void print_frames(void **frames, int n)
{
    Dl_info self;
    if (!dladdr((void *)&crash_rt_install, &self))
        return;
    for (int i = 0; i < n; i++) {
        Dl_info info;
        if (!dladdr(frames[i], &info) || !info.dli_sname || info.dli_fbase != self.dli_fbase)
            continue;
        if (skip_frame(info.dli_sname))
            continue;
        char line[256];
        snprintf(line, sizeof line, " %s+0x%lx\n", info.dli_sname,
                 (unsigned long)((char *)frames[i] - (char *)info.dli_saddr));
        put(line);
    }
}

static void report_here(const char *banner)
{
    void *frames[MAX_FRAMES];
    int n = backtrace(frames, MAX_FRAMES);
    fflush(stdout);
    put("BUG: ");
    put(banner);
    put("\nCall Trace:\n");
    print_frames(frames, n);
}

static void on_signal(int sig)
{
    const char *banner = "fatal signal";
    switch (sig) {
    case SIGSEGV: banner = "unable to handle page fault (SIGSEGV)"; break;
    case SIGBUS: banner = "bus error (SIGBUS)"; break;
    case SIGFPE: banner = "divide error (SIGFPE)"; break;
    case SIGABRT: banner = "abort called (SIGABRT)"; break;
    case SIGILL: banner = "invalid opcode (SIGILL)"; break;
    }
    report_here(banner);
    signal(sig, SIG_DFL);
    raise(sig);
}

void crash_rt_install(void)
{
    int sigs[] = {SIGSEGV, SIGBUS, SIGFPE, SIGABRT, SIGILL};
    void *warm[1];
    backtrace(warm, 1); /* loads libgcc before any handler runs */
    for (size_t i = 0; i < sizeof sigs / sizeof sigs[0]; i++)
        signal(sigs[i], on_signal);
}

void crash_rt_fail(const char *banner)
{
    report_here(banner);
    _exit(1);
}

void *crash_rt_alloc(size_t size)
{
    void *p = malloc(size);
    for (int i = 0; p && i < MAX_LIVE; i++) {
        if (!live[i].ptr) {
            live[i].ptr = p;
            live[i].size = size;
            live[i].nframes = backtrace(live[i].frames, MAX_FRAMES);
            break;
        }
    }
    return p;
}

char *crash_rt_strdup(const char *s)
{
    size_t n = strlen(s) + 1;
    char *p = crash_rt_alloc(n);
    if (p)
        memcpy(p, s, n);
    return p;
}

void crash_rt_free(void *p)
{
    for (int i = 0; p && i < MAX_LIVE; i++) {
        if (live[i].ptr == p) {
            live[i].ptr = NULL;
            break;
        }
    }
    free(p);
}

void crash_rt_check_leaks(void)
{
    for (int i = 0; i < MAX_LIVE; i++) {
        if (!live[i].ptr)
            continue;
        char line[128];
        fflush(stdout);
        put("BUG: memory leak\n");
        snprintf(line, sizeof line, "unreferenced object (size %zu):\n", live[i].size);
        put(line);
        put("  backtrace:\n");
        print_frames(live[i].frames, live[i].nframes);
        _exit(1);
    }
}
