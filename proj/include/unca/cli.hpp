// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

namespace unca
{

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `unca` tool. Reports go to `out`, diagnostics and
/// usage text to `err`.
int cli_main(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

}
