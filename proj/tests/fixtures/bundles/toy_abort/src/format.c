#include "format.h"

#include <stdio.h>

void print_result(const char *label, int value)
{
    char line[96];
    snprintf(line, sizeof line, "%-12s %6d", label, value);
    puts(line);
}
