int get(int* a, int i) { return a[i]; }