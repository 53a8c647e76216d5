#ifndef PIRT_COMMON_HPP
#define PIRT_COMMON_HPP

#include <stdexcept>
#include <string>

namespace pirt {

// Error taxonomy maps onto CLI exit codes: config = 2, data = 3, numerical = 4.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class ModelKind { Rasch, TwoPL };

// Which item parameter a feature column feeds.
enum class Routing { BetaOnly, PhiOnly, Both };

inline std::string to_string(ModelKind k) {
    return k == ModelKind::Rasch ? "rasch" : "2pl";
}

inline ModelKind model_kind_from_string(const std::string& s) {
    if (s == "rasch") return ModelKind::Rasch;
    if (s == "2pl") return ModelKind::TwoPL;
    throw ConfigError("unknown model kind: " + s);
}

inline std::string to_string(Routing r) {
    switch (r) {
        case Routing::BetaOnly: return "beta_only";
        case Routing::PhiOnly: return "phi_only";
        default: return "both";
    }
}

inline Routing routing_from_string(const std::string& s) {
    if (s == "beta_only") return Routing::BetaOnly;
    if (s == "phi_only") return Routing::PhiOnly;
    if (s == "both") return Routing::Both;
    throw ConfigError("unknown routing: " + s);
}

} // namespace pirt

#endif
