#pragma once

#include <stdexcept>
#include <string>

namespace gq {

/// Root of every failure raised by the toolkit. `where()` names the module
/// and operation that detected the problem.
class Error : public std::runtime_error {
public:
    Error(std::string where, const std::string& what)
        : std::runtime_error(where + ": " + what), where_(std::move(where)) {}
    const std::string& where() const noexcept { return where_; }

private:
    std::string where_;
};

#define GQ_DEFINE_ERROR(Name)                                              \
    class Name : public Error {                                            \
    public:                                                                \
        Name(std::string where, const std::string& what)                   \
            : Error(std::move(where), std::string(#Name) + ": " + what) {} \
    };

// geom
GQ_DEFINE_ERROR(DelzantViolation)
GQ_DEFINE_ERROR(ConvexityFailure)
GQ_DEFINE_ERROR(SingularMetric)
GQ_DEFINE_ERROR(LiftObstruction)
GQ_DEFINE_ERROR(InvalidStructure)
// quantize
GQ_DEFINE_ERROR(QuadratureFailure)
GQ_DEFINE_ERROR(ResolutionError)
GQ_DEFINE_ERROR(AmbiguousWindow)
GQ_DEFINE_ERROR(DimensionAnomaly)
GQ_DEFINE_ERROR(FormatError)
// bergman
GQ_DEFINE_ERROR(IncompleteBasis)
GQ_DEFINE_ERROR(FitError)
// embed
GQ_DEFINE_ERROR(BasePointFailure)
GQ_DEFINE_ERROR(StencilError)
// invariants
GQ_DEFINE_ERROR(TraceAnomaly)
GQ_DEFINE_ERROR(BoundaryQuadratureFailure)
GQ_DEFINE_ERROR(InconsistentAction)
// degeneration
GQ_DEFINE_ERROR(UnderflowAtNode)
GQ_DEFINE_ERROR(MonotonicityViolation)
GQ_DEFINE_ERROR(NumericalFault)
// cli
GQ_DEFINE_ERROR(ConfigError)

#undef GQ_DEFINE_ERROR

}  // namespace gq
