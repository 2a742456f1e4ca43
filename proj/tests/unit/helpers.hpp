#pragma once

#include <functional>

#include "doctest.h"
#include "ssicl/error.hpp"
#include "ssicl/rng.hpp"
#include "ssicl/types.hpp"

namespace testing {

inline ssicl::Matrix random_matrix(int rows, int cols, ssicl::RandomStream& rng, double scale = 1.0) {
  ssicl::Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  return m;
}

inline ssicl::Vector random_vector(int size, ssicl::RandomStream& rng) {
  ssicl::Vector v(size);
  for (int i = 0; i < size; ++i) v[i] = rng.normal();
  return v;
}

inline ssicl::Vector random_signs(int size, ssicl::RandomStream& rng) {
  ssicl::Vector v(size);
  for (int i = 0; i < size; ++i) v[i] = rng.rademacher();
  return v;
}

inline bool throws_category(const std::function<void()>& fn, ssicl::ErrorCategory category) {
  try {
    fn();
  } catch (const ssicl::Error& e) {
    return e.category() == category;
  }
  return false;
}

}  // namespace testing

#define CHECK_CATEGORY(expr, category) \
  CHECK(testing::throws_category([&] { (void)(expr); }, ssicl::ErrorCategory::category))
