#include "table.h"

void table_init(struct table *t)
{
    t->count = 0;
}

int table_put(struct table *t, const char *name, int value)
{
    if (t->count == TABLE_CAP)
        return -1;
    t->entries[t->count].name = name;
    t->entries[t->count].value = value;
    t->count++;
    return 0;
}
