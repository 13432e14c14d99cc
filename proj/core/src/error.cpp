#include "hamlab/error.hpp"

namespace hamlab {

const char* to_string(error_kind k) noexcept {
  switch (k) {
    case error_kind::domain: return "domain";
    case error_kind::structural: return "structural";
    case error_kind::stiffness: return "stiffness";
    case error_kind::accuracy: return "accuracy";
    case error_kind::regularity: return "regularity";
    case error_kind::transversality: return "transversality";
    case error_kind::conjugate_point: return "conjugate_point";
    case error_kind::inconsistency: return "inconsistency";
    case error_kind::precondition: return "precondition";
    case error_kind::config: return "config";
    case error_kind::io: return "io";
  }
  return "unknown";
}

void fail(error_kind kind, const std::string& what) { throw hamlab_error(kind, what); }

}  // namespace hamlab
