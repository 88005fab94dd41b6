/* Square matrix multiplication with the two inner loops switched (row/k/col). */
int N;
float A[N * N];
float B[N * N];
float C[N * N];
for (int row = 0; row < N; row++) {
  for (int k = 0; k < N; k++) {
    for (int col = 0; col < N; col++) {
      C[row * N + col] += A[row * N + k] * B[k * N + col];
    }
  }
}
