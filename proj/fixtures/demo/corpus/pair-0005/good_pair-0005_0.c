void put(char* d, const char* s) { strncpy(d, s, 15); d[15] = 0; }