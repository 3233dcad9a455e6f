#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include "l0qsvm/error.hpp"

int main(int argc, char** argv) {
  l0qsvm::set_warnings_enabled(false);
  doctest::Context context(argc, argv);
  return context.run();
}
