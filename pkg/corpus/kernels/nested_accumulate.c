/* Outer loop clears A[i], inner loop accumulates i*j into it. */
int len;
int A[len];
for (int i = 0; i < len; i++) {
  A[i] = 0;
  for (int j = 0; j < len; j++) {
    A[i] += i * j;
  }
}
