/* In-place 9-point averaging stencil over the interior of an N*N grid. */
int N;
float matrix[N * N];
for (int i = 1; i < N - 1; i++) {
  for (int j = 1; j < N - 1; j++) {
    matrix[i * N + j] = (matrix[(i - 1) * N + (j - 1)] + matrix[(i - 1) * N + j] + matrix[(i - 1) * N + (j + 1)] + matrix[i * N + (j - 1)] + matrix[i * N + j] + matrix[i * N + (j + 1)] + matrix[(i + 1) * N + (j - 1)] + matrix[(i + 1) * N + j] + matrix[(i + 1) * N + (j + 1)]) / 9.0;
  }
}
