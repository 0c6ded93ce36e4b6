#include "loadlord/supervisor.hpp"

#include <cstring>
#include <sstream>

#include "loadlord/errors.hpp"

#ifdef __linux__
#include <fcntl.h>
#include <fstream>
#include <signal.h>
#include <sys/ptrace.h>
#include <sys/user.h>
#include <sys/wait.h>
#include <unistd.h>
#endif

namespace loadlord {

#ifdef __linux__

namespace {

constexpr uint8_t kTrapFiller = 0xcc; // int3: faults report the exact address

class RemoteMemory {
public:
    explicit RemoteMemory(pid_t pid) : pid_(pid) {}

    std::vector<uint8_t> peek(uint64_t addr, size_t len) const {
        std::vector<uint8_t> out(len);
        size_t done = 0;
        while (done < len) {
            uint64_t word_addr = (addr + done) & ~7ull;
            long word = peek_word(word_addr);
            size_t off = (addr + done) - word_addr;
            size_t n = std::min<size_t>(8 - off, len - done);
            std::memcpy(out.data() + done, reinterpret_cast<const uint8_t*>(&word) + off, n);
            done += n;
        }
        return out;
    }

    void poke(uint64_t addr, std::span<const uint8_t> bytes) const {
        size_t done = 0;
        while (done < bytes.size()) {
            uint64_t word_addr = (addr + done) & ~7ull;
            size_t off = (addr + done) - word_addr;
            size_t n = std::min<size_t>(8 - off, bytes.size() - done);
            long word = 0;
            if (off != 0 || n != 8) word = peek_word(word_addr);
            std::memcpy(reinterpret_cast<uint8_t*>(&word) + off, bytes.data() + done, n);
            errno = 0;
            if (ptrace(PTRACE_POKETEXT, pid_, word_addr, word) < 0)
                throw RemoteMemoryFailure("poke failed at " + std::to_string(word_addr) + ": " +
                                          std::strerror(errno));
            done += n;
        }
    }

    void fill(uint64_t addr, size_t len, uint8_t value) const {
        std::vector<uint8_t> buf(len, value);
        poke(addr, buf);
    }

private:
    long peek_word(uint64_t addr) const {
        errno = 0;
        long word = ptrace(PTRACE_PEEKTEXT, pid_, addr, 0);
        if (errno != 0)
            throw RemoteMemoryFailure("peek failed at " + std::to_string(addr) + ": " +
                                      std::strerror(errno));
        return word;
    }

    pid_t pid_;
};

bool maps_are_wx_clean(pid_t pid) {
    std::ifstream maps("/proc/" + std::to_string(pid) + "/maps");
    std::string line;
    while (std::getline(maps, line)) {
        std::istringstream fields(line);
        std::string range, perms;
        if (!(fields >> range >> perms)) continue;
        if (perms.size() >= 3 && perms[1] == 'w' && perms[2] == 'x') return false;
    }
    return true;
}

struct Child {
    pid_t pid = -1;
    ~Child() {
        if (pid > 0) {
            kill(pid, SIGKILL);
            waitpid(pid, nullptr, 0);
        }
    }
    void release() { pid = -1; }
};

} // namespace

bool supervisor_platform_supported() {
    // Probe: trace a throwaway child. Containers commonly block ptrace.
    pid_t pid = fork();
    if (pid < 0) return false;
    if (pid == 0) {
        if (ptrace(PTRACE_TRACEME, 0, nullptr, nullptr) < 0) _exit(1);
        raise(SIGSTOP);
        _exit(0);
    }
    int status = 0;
    if (waitpid(pid, &status, 0) < 0) return false;
    bool ok = WIFSTOPPED(status);
    if (ok) {
        ptrace(PTRACE_CONT, pid, nullptr, nullptr);
        waitpid(pid, &status, 0);
        ok = WIFEXITED(status) && WEXITSTATUS(status) == 0;
    } else {
        kill(pid, SIGKILL);
        waitpid(pid, nullptr, 0);
    }
    return ok;
}

SupervisorResult run_supervised(const std::string& path,
                                const std::vector<std::string>& args,
                                const SupervisorOptions& opts) {
    if (!supervisor_platform_supported())
        throw PlatformUnsupported("process tracing is unavailable on this host");

    Artifacts artifacts = analyze_file(path);
    if (artifacts.image.position_independent)
        throw SpawnFailure("live supervision needs a fixed-address (non-PIE) executable");

    SupervisorResult result;
    auto log = [&](const std::string& line) {
        result.log.push_back(line);
        if (opts.verbose) fprintf(stderr, "[loadlord] %s\n", line.c_str());
    };

    pid_t pid = fork();
    if (pid < 0) throw SpawnFailure(std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
        if (ptrace(PTRACE_TRACEME, 0, nullptr, nullptr) < 0) _exit(127);
        if (!opts.stdout_path.empty()) {
            int fd = open(opts.stdout_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
            if (fd < 0) _exit(127);
            dup2(fd, STDOUT_FILENO);
            close(fd);
        }
        std::vector<char*> argv;
        argv.push_back(const_cast<char*>(path.c_str()));
        for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
        argv.push_back(nullptr);
        execv(path.c_str(), argv.data());
        _exit(127);
    }

    Child child{pid};
    int status = 0;
    if (waitpid(pid, &status, 0) < 0 || !WIFSTOPPED(status)) {
        if (WIFEXITED(status) && WEXITSTATUS(status) == 127)
            throw SpawnFailure("exec failed for " + path);
        throw SpawnFailure("child did not stop at exec");
    }
    ptrace(PTRACE_SETOPTIONS, pid, nullptr, PTRACE_O_EXITKILL);

    RemoteMemory mem(pid);
    PolicyEngine engine(artifacts.map, artifacts.index, artifacts.legal, opts.policy);

    // RuntimeArea: blank every executable byte with trapping filler.
    for (const auto& seg : artifacts.image.segments) {
        if (!seg.perms.execute) continue;
        mem.fill(seg.vaddr, seg.mem_size, kTrapFiller);
    }

    auto load_function_bytes = [&](uint32_t id) {
        const FunctionRecord& rec = artifacts.map.by_id(id);
        std::vector<uint8_t> code = bytes_at(artifacts.image, rec.start, rec.size());
        mem.poke(rec.start, code);
        ++result.loads;
    };
    auto clear_function_bytes = [&](uint32_t id) {
        const FunctionRecord& rec = artifacts.map.by_id(id);
        mem.fill(rec.start, rec.size(), kTrapFiller);
        ++result.unloads;
    };

    LoadOutcome entry_outcome = engine.request_load(artifacts.entry, LoadReason::new_function);
    if (entry_outcome.kind != LoadOutcome::Kind::loaded)
        throw SpawnFailure("entry point is not loadable under the policy");
    load_function_bytes(*entry_outcome.function);
    log("entry loaded at " + std::to_string(artifacts.entry));

    for (;;) {
        if (ptrace(PTRACE_CONT, pid, nullptr, nullptr) < 0)
            throw SpawnFailure(std::string("continue: ") + std::strerror(errno));
        if (waitpid(pid, &status, 0) < 0)
            throw SpawnFailure(std::string("waitpid: ") + std::strerror(errno));

        if (WIFEXITED(status)) {
            result.exited = true;
            result.exit_code = WEXITSTATUS(status);
            child.release();
            waitpid(pid, nullptr, WNOHANG);
            break;
        }
        if (WIFSIGNALED(status)) {
            log("child killed by signal " + std::to_string(WTERMSIG(status)));
            child.release();
            break;
        }
        if (!WIFSTOPPED(status)) continue;

        if (!maps_are_wx_clean(pid)) result.wx_clean = false;

        int sig = WSTOPSIG(status);
        if (sig != SIGTRAP) {
            // not ours: forward and keep going
            log("forwarding signal " + std::to_string(sig));
            ptrace(PTRACE_CONT, pid, nullptr, reinterpret_cast<void*>(static_cast<long>(sig)));
            if (waitpid(pid, &status, 0) >= 0 && WIFEXITED(status)) {
                result.exited = true;
                result.exit_code = WEXITSTATUS(status);
                child.release();
            } else if (WIFSIGNALED(status)) {
                log("child killed by signal " + std::to_string(WTERMSIG(status)));
                child.release();
            }
            break;
        }

        ++result.traps;
        user_regs_struct regs{};
        if (ptrace(PTRACE_GETREGS, pid, nullptr, &regs) < 0)
            throw RemoteMemoryFailure("cannot read registers");
        uint64_t trap_addr = regs.rip - 1; // int3 stops one past the filler byte

        const Segment* seg = artifacts.image.segment_containing(trap_addr);
        if (!seg || !seg->perms.execute)
            throw UnknownTrapAddress("trap outside executable segments");

        bool is_return = artifacts.legal.call_returns.count(trap_addr) > 0;
        if (is_return && artifacts.legal.function_starts.count(trap_addr) > 0)
            log("ambiguous trap address (function start and call return)");

        LoadOutcome outcome;
        if (is_return) {
            outcome = engine.handle_return(trap_addr);
        } else {
            LoadReason reason = artifacts.legal.cross_jump_targets.count(trap_addr)
                                    ? LoadReason::cross_jump
                                    : LoadReason::new_function;
            outcome = engine.request_load(trap_addr, reason);
        }

        if (outcome.kind == LoadOutcome::Kind::violation) {
            result.violated = true;
            result.violation_addr = trap_addr;
            log("violation: illegal load address, terminating child");
            break; // Child destructor kills; resident bytes are absent, no way on
        }

        if (outcome.kind == LoadOutcome::Kind::loaded) {
            for (uint32_t evicted : outcome.evicted) clear_function_bytes(evicted);
            load_function_bytes(*outcome.function);
        } else {
            // resident but trapped: refresh the bytes and move on
            load_function_bytes(*outcome.function);
        }

        regs.rip = trap_addr;
        if (ptrace(PTRACE_SETREGS, pid, nullptr, &regs) < 0)
            throw RemoteMemoryFailure("cannot rewind instruction pointer");

        if (!maps_are_wx_clean(pid)) result.wx_clean = false;
    }

    return result;
}

#else // !__linux__

bool supervisor_platform_supported() { return false; }

SupervisorResult run_supervised(const std::string&, const std::vector<std::string>&,
                                const SupervisorOptions&) {
    throw PlatformUnsupported("live supervision requires Linux process tracing");
}

#endif

} // namespace loadlord
