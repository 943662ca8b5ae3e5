// verify.hpp
// Built-in verification suite: every release criterion of this artifact as a
// deterministic pass/fail check, printable one line per criterion. Used by
// both the acceptance test binary and the CLI's `verify` subcommand.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace iontele::accept {

struct Options {
    // CLI binary spawned (serve/alice/bob) for the networked criterion; when
    // empty that criterion runs the host and clients in-process over
    // loopback TCP instead.
    std::string cli_path;
    std::ostream* out = nullptr; // per-criterion lines, null = silent
    std::vector<int> only;       // run a subset of criterion ids; empty = all
};

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
};

// Runs the suite. Honors the IONTELE_SABOTAGE_CORRECTION environment hook
// (an angle offset injected into the correction table) as a negative control.
std::vector<CriterionResult> run_all(const Options& options);

bool all_passed(const std::vector<CriterionResult>& results);

} // namespace iontele::accept
