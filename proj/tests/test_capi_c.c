#include <stdio.h>
#include <string.h>

#include "genft/genft.h"

#define EXPECT(cond)                                           \
  do {                                                         \
    if (!(cond)) {                                             \
      fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #cond); \
      return 1;                                                \
    }                                                          \
  } while (0)

int main(void) {
  genft_budget_spec spec;
  memset(&spec, 0, sizeof spec);
  spec.layers = 12;
  spec.d_in = 768;
  spec.d_out = 768;
  spec.types = 2;
  spec.r = 34;
  uint64_t count = 0;
  EXPECT(genft_count_lora(&spec, &count) == GENFT_OK);
  EXPECT(count == 1253376u);

  uint64_t a = 0;
  EXPECT(genft_solve_shared_dim(12, 2, 3, &a) == GENFT_ERR_INFEASIBLE);
  EXPECT(strlen(genft_last_error()) > 0);
  EXPECT(genft_status_is_validation(GENFT_ERR_INFEASIBLE));

  genft_matrix* m = NULL;
  const double values[] = {1, 2, 3, 4, 5, 6};
  EXPECT(genft_matrix_create(2, 3, values, &m) == GENFT_OK);
  EXPECT(genft_matrix_rows(m) == 2 && genft_matrix_cols(m) == 3);
  EXPECT(genft_matrix_data(m)[5] == 6.0);
  genft_matrix_free(m);
  EXPECT(genft_matrix_create(2, 3, NULL, NULL) == GENFT_ERR_ARGUMENT);
  puts("c api ok");
  return 0;
}
