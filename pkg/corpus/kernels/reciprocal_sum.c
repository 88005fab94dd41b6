/* Single-accumulator reciprocal sum; the i=0 term saturates to infinity. */
int len;
float sum = 0.0;
for (int i = 0; i < len; i++) {
  sum += 1 / (float)i;
}
