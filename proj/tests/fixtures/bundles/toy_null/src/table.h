#ifndef TABLE_H
#define TABLE_H

#define TABLE_CAP 8

struct entry {
    const char *name;
    int value;
};

struct table {
    struct entry entries[TABLE_CAP];
    int count;
};

void table_init(struct table *t);
int table_put(struct table *t, const char *name, int value);

#endif
