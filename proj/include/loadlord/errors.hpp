#ifndef LOADLORD_ERRORS_HPP
#define LOADLORD_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace loadlord {

// Base for all toolkit errors so callers can catch the whole family.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// image-model
struct MalformedImage : Error { using Error::Error; };
struct NoExecutableSegment : Error { using Error::Error; };
struct UnsupportedMachine : Error { using Error::Error; };
struct OutOfRange : Error { using Error::Error; };

// listing / trace / seeds file parsing
struct ParseError : Error {
    ParseError(size_t line_no, const std::string& what_arg)
        : Error("line " + std::to_string(line_no) + ": " + what_arg), line(line_no) {}
    size_t line;
};

// function-map
struct EmptyCodeRegion : Error { using Error::Error; };

// policy-engine
struct InconsistentArtifacts : Error { using Error::Error; };
struct UnknownAddress : Error { using Error::Error; };
struct EmptyResidentSet : Error { using Error::Error; };

// simulator
struct ZeroTotal : Error { using Error::Error; };

// live-supervisor
struct PlatformUnsupported : Error { using Error::Error; };
struct SpawnFailure : Error { using Error::Error; };
struct RemoteMemoryFailure : Error { using Error::Error; };
struct UnknownTrapAddress : Error { using Error::Error; };

} // namespace loadlord

#endif
