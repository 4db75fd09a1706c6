// Copyright 2026 The edgepipe Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
//
// The edgepipe command line: validate-profile, plan, simulate, compare and
// inject-fault. Lives in the library so tests can drive it in-process.

#pragma once

#include <iosfwd>

namespace edgepipe {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;   // bad input, infeasible request
inline constexpr int kExitInternal = 2;  // a library invariant broke

// Results go to `out` (or the files named by flags), diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace edgepipe
