int get(int* a, int i) { return i < 0 || i >= 16 ? 0 : a[i]; }