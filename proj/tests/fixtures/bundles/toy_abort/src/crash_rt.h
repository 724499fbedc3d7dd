#ifndef CRASH_RT_H
#define CRASH_RT_H

#include <stddef.h>

/* Installs fatal-signal handlers that print a BUG: banner and a call trace. */
void crash_rt_install(void);

/* Prints a BUG: banner with the current call trace and exits. */
void crash_rt_fail(const char *banner);

/* Allocation tracking for leak reports. */
void *crash_rt_alloc(size_t size);
char *crash_rt_strdup(const char *s);
void crash_rt_free(void *p);
/* Reports the oldest allocation that is still live, if any, and exits. */
void crash_rt_check_leaks(void);

#endif
