// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MGBA_OPERATOR_HPP
#define MGBA_OPERATOR_HPP

#include <functional>

#include "mgba/blockmat.hpp"

namespace mgba {

/// y = Op x. The callee sizes y.
using LinearOperator = std::function<void(const Vector& x, Vector& y)>;

}  // namespace mgba

#endif  // MGBA_OPERATOR_HPP
