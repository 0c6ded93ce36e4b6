#ifndef LOADLORD_SUPERVISOR_HPP
#define LOADLORD_SUPERVISOR_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "loadlord/analysis.hpp"
#include "loadlord/policy.hpp"

namespace loadlord {

struct SupervisorResult {
    int exit_code = -1;
    bool exited = false;          // normal exit observed
    bool violated = false;        // terminated on an illegal load address
    uint64_t violation_addr = 0;
    uint64_t traps = 0;           // SIGTRAP stops handled
    uint64_t loads = 0;
    uint64_t unloads = 0;
    bool wx_clean = true;         // no w+x mapping seen at any stop point
    std::vector<std::string> log; // human-readable event lines
};

struct SupervisorOptions {
    PolicyConfig policy;
    std::string stdout_path; // redirect child stdout when non-empty
    bool verbose = false;
};

// True when this build/host can trace children (Linux with a working
// ptrace). The simulator stays available either way.
bool supervisor_platform_supported();

// Run `path` under the load policy: fork a traced child, blank every
// executable segment with trapping filler, load the entry function, then
// service SIGTRAPs by validating the fault address through the policy
// engine and copying function bytes from the parsed image (the
// PrepareArea) into the child (the RuntimeArea). Evicted extents are
// refilled with filler so any re-entry traps again.
//
// The child must be a non-PIE x86-64 ELF executable. Throws
// PlatformUnsupported, SpawnFailure, RemoteMemoryFailure.
SupervisorResult run_supervised(const std::string& path,
                                const std::vector<std::string>& args,
                                const SupervisorOptions& opts);

} // namespace loadlord

#endif
