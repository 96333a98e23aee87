void put(char* d, const char* s) { strcpy(d, s); }