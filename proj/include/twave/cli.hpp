#pragma once

#include <string>
#include <vector>

namespace twave {

inline constexpr const char* kVersion = "0.1.0";

// Reproducibility header carried at the top of every output file.
std::string config_header(const std::vector<std::string>& argv);

// Exit status: 0 success, 1 computational error, 2 usage error.
int dispatch(const std::vector<std::string>& argv);
int dispatch(int argc, const char* const* argv);

}  // namespace twave
