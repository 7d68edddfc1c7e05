#pragma once

#include <gtest/gtest.h>

#include "w2s/error.hpp"

#define EXPECT_W2S_ERROR(expr, expected_kind)                                        \
  do {                                                                               \
    try {                                                                            \
      (void)(expr);                                                                  \
      ADD_FAILURE() << "expected " << w2s::to_string(expected_kind) << " from " #expr; \
    } catch (const w2s::Error& e_) {                                                 \
      EXPECT_EQ(e_.kind(), expected_kind) << e_.what();                              \
    }                                                                                \
  } while (0)
