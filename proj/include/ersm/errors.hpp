#pragma once

#include <stdexcept>
#include <string>

namespace ersm {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define ERSM_DEFINE_ERROR(Name)                                       \
    class Name : public Error {                                       \
    public:                                                           \
        explicit Name(const std::string& msg) : Error(msg) {}         \
    }

ERSM_DEFINE_ERROR(ParseError);
ERSM_DEFINE_ERROR(IoError);
ERSM_DEFINE_ERROR(OutOfRange);
ERSM_DEFINE_ERROR(EmptySeries);
ERSM_DEFINE_ERROR(TooShort);
ERSM_DEFINE_ERROR(InvalidCutoff);
ERSM_DEFINE_ERROR(InvalidArgument);
ERSM_DEFINE_ERROR(InvalidShift);
ERSM_DEFINE_ERROR(DegenerateSignal);
ERSM_DEFINE_ERROR(NoOverlap);
ERSM_DEFINE_ERROR(DegenerateFit);
ERSM_DEFINE_ERROR(NoValidationData);
ERSM_DEFINE_ERROR(TrainingDiverged);
ERSM_DEFINE_ERROR(Misaligned);
ERSM_DEFINE_ERROR(SpanTooShort);

#undef ERSM_DEFINE_ERROR

} // namespace ersm
