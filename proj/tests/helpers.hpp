#ifndef HIRC_TEST_HELPERS_HPP
#define HIRC_TEST_HELPERS_HPP

#include <fstream>
#include <sstream>
#include <string>

#include "hirc/parser.hpp"

namespace hirc_test {

inline std::string readFile(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string kernelPath(const std::string &name) {
  return std::string(HIRC_KERNEL_DIR) + "/" + name;
}

inline hirc::ParseResult parseKernel(const std::string &name) {
  return hirc::parse(readFile(kernelPath(name)), name);
}

} // namespace hirc_test

#endif
