#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "dpost/common/runtime.h"

int main(int argc, char** argv) {
  dpost::tune_allocator();
  doctest::Context context(argc, argv);
  return context.run();
}
