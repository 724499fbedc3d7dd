#ifndef BUCKETS_H
#define BUCKETS_H

#define NBUCKETS 3
#define BUCKET_CAP 8

struct buckets {
    int values[NBUCKETS][BUCKET_CAP];
    int sizes[NBUCKETS];
};

void buckets_fill(struct buckets *b, const int *samples, int n);
int summarize_bucket(const struct buckets *b, int i);

#endif
