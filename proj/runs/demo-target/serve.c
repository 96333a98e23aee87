#include <string.h>
void handle_name(char* dst, const char* src) {
    if (strlen(src) >= 64) return;
    strcpy(dst, src);
}
