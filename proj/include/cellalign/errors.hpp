#pragma once

#include <stdexcept>
#include <string>

namespace cellalign {

// Base for all library errors. what() always starts with the concrete
// error name so callers (and the CLI) can report it without RTTI.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define CELLALIGN_DEFINE_ERROR(Name)                                        \
    class Name : public Error {                                             \
    public:                                                                 \
        explicit Name(const std::string& msg) : Error(#Name ": " + msg) {}  \
    };

CELLALIGN_DEFINE_ERROR(SingularTransform)
CELLALIGN_DEFINE_ERROR(InvalidPixelSize)
CELLALIGN_DEFINE_ERROR(SchemaError)
CELLALIGN_DEFINE_ERROR(ParseError)
CELLALIGN_DEFINE_ERROR(DuplicateId)
CELLALIGN_DEFINE_ERROR(TooFewLandmarks)
CELLALIGN_DEFINE_ERROR(IoError)
CELLALIGN_DEFINE_ERROR(ConfigError)
CELLALIGN_DEFINE_ERROR(TooFewPoints)
CELLALIGN_DEFINE_ERROR(InvalidInput)
CELLALIGN_DEFINE_ERROR(EmptyInput)
CELLALIGN_DEFINE_ERROR(NoDenseRegion)
CELLALIGN_DEFINE_ERROR(MissingFeature)
CELLALIGN_DEFINE_ERROR(FeatureMismatch)
CELLALIGN_DEFINE_ERROR(DegenerateAffinity)
CELLALIGN_DEFINE_ERROR(UnknownId)
CELLALIGN_DEFINE_ERROR(TooFewPairs)
CELLALIGN_DEFINE_ERROR(DegenerateConfiguration)
CELLALIGN_DEFINE_ERROR(TooFewCells)
CELLALIGN_DEFINE_ERROR(WindowsEmpty)
CELLALIGN_DEFINE_ERROR(MissingLabel)
CELLALIGN_DEFINE_ERROR(GridMismatch)
CELLALIGN_DEFINE_ERROR(UndefinedCorrelation)

#undef CELLALIGN_DEFINE_ERROR

}  // namespace cellalign
