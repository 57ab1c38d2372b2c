#pragma once

#include <stdexcept>
#include <string>

namespace cornerbie {

// Base class for everything thrown by the library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define CORNERBIE_DEFINE_ERROR(Name)                                \
    struct Name : Error {                                           \
        explicit Name(const std::string& msg) : Error(msg) {}       \
    }

// geometry
CORNERBIE_DEFINE_ERROR(DegenerateEdge);
CORNERBIE_DEFINE_ERROR(SelfIntersection);
CORNERBIE_DEFINE_ERROR(CollinearCorner);

// mesh
CORNERBIE_DEFINE_ERROR(InvalidSpec);
CORNERBIE_DEFINE_ERROR(SegmentOutOfRange);

// kernel
CORNERBIE_DEFINE_ERROR(CoincidentPoints);
CORNERBIE_DEFINE_ERROR(CornerSource);
CORNERBIE_DEFINE_ERROR(InvalidCornerParam);
CORNERBIE_DEFINE_ERROR(ObservationOnPanel);

// quadrature
CORNERBIE_DEFINE_ERROR(UnsupportedOrder);
CORNERBIE_DEFINE_ERROR(NonFiniteIntegrand);
CORNERBIE_DEFINE_ERROR(MaxDepthExceeded);

// operators
CORNERBIE_DEFINE_ERROR(SingularSystem);
CORNERBIE_DEFINE_ERROR(EvaluationAtBreakpoint);
CORNERBIE_DEFINE_ERROR(PointNotInterior);

// harness
CORNERBIE_DEFINE_ERROR(PointPlacement);
CORNERBIE_DEFINE_ERROR(NonPositiveError);

// cli
CORNERBIE_DEFINE_ERROR(ParseError);
CORNERBIE_DEFINE_ERROR(ValidationError);

#undef CORNERBIE_DEFINE_ERROR

}  // namespace cornerbie
