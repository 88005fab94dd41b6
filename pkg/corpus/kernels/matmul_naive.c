/* Square matrix multiplication, row/col/k loop order. C accumulates A*B. */
int N;
float A[N * N];
float B[N * N];
float C[N * N];
for (int row = 0; row < N; row++) {
  for (int col = 0; col < N; col++) {
    for (int k = 0; k < N; k++) {
      C[row * N + col] += A[row * N + k] * B[k * N + col];
    }
  }
}
