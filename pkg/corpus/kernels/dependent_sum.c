/* Running integer sum with a strict loop-carried dependence. */
int len;
int sum = 0;
for (int i = 0; i < len; i++) {
  sum = sum + i;
}
