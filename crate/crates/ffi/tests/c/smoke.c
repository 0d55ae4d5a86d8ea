#include <stdio.h>
#include <string.h>

#include "orbitlab.h"

#define EXPECT(cond)                                              \
  do {                                                            \
    if (!(cond)) {                                                \
      fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #cond); \
      return 1;                                                   \
    }                                                             \
  } while (0)

int main(void) {
  OrbitlabOperator *j = NULL;
  OrbitlabOperator *inv = NULL;
  OrbitlabOperator *bad = NULL;
  char *image = NULL;

  EXPECT(orbitlab_operator_from_json(
             "{\"base\":\"identity\",\"terms\":[{\"f\":[\"1:1/1\"],\"v\":[\"1:1/2\"]}]}", &j) ==
         ORBITLAB_STATUS_OK);
  EXPECT(orbitlab_operator_invert(j, &inv) == ORBITLAB_STATUS_OK);
  EXPECT(orbitlab_operator_apply(inv, "[\"1:3/2\"]", &image) == ORBITLAB_STATUS_OK);
  EXPECT(strcmp(image, "[\"1:1/1\"]") == 0);
  orbitlab_string_free(image);

  EXPECT(orbitlab_operator_from_json("{", &bad) == ORBITLAB_STATUS_PARSE);
  EXPECT(bad == NULL);
  EXPECT(orbitlab_last_error() != NULL);

  orbitlab_operator_free(inv);
  orbitlab_operator_free(j);
  printf("orbitlab %s ok\n", orbitlab_version());
  return 0;
}
