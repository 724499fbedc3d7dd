#include "server.h"

#include "session.h"

int serve_user(const char *user, int requests)
{
    struct session *s = session_open(user);
    for (int i = 0; i < requests; i++)
        session_touch(s);
    int served = s->requests;
    session_close(s);
    return served;
}
