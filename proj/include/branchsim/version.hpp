#ifndef BRANCHSIM_VERSION_HPP
#define BRANCHSIM_VERSION_HPP

namespace branchsim {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace branchsim

#endif
