#ifndef FORMAT_H
#define FORMAT_H

void print_result(const char *label, int value);

#endif
