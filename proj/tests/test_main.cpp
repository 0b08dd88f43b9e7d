#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "xcnn/blas.hpp"

int main(int argc, char** argv) {
  xcnn::set_blas_threads(1);
  return doctest::Context(argc, argv).run();
}
