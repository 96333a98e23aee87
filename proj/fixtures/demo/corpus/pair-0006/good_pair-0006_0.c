void ok(void) {}