/* Straight array initialisation: A[i] = i. */
int len;
int A[len];
for (int i = 0; i < len; i++) {
  A[i] = i;
}
