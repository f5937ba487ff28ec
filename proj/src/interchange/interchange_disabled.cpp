#include "rmpd/errors.hpp"
#include "rmpd/interchange.hpp"

namespace rmpd {

bool interchange_available() noexcept { return false; }

ClassifierHandle open_interchange(const std::filesystem::path&) {
    throw BackendError("this build has no interchange backend (configure with RMPD_WITH_INTERCHANGE=ON)");
}

}  // namespace rmpd
