#include "session.h"

#include "crash_rt.h"

struct session *session_open(const char *user)
{
    struct session *s = crash_rt_alloc(sizeof *s);
    s->user = crash_rt_strdup(user);
    s->requests = 0;
    return s;
}

void session_touch(struct session *s)
{
    s->requests++;
}

void session_close(struct session *s)
{
    crash_rt_free(s);
}
