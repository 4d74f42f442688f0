#ifndef BRANCHSIM_CLI_HPP
#define BRANCHSIM_CLI_HPP

namespace branchsim {

// Batch front-end. Subcommands:
//   simulate | ensemble | ode | fixed-points | compare | oracle-check | validate-law
// Exit codes: 0 success, 1 check failed, 2 config/usage error, 3 law contract
// violation, 4 resource guard tripped.
int run_cli(int argc, const char* const* argv);

}  // namespace branchsim

#endif
