#ifndef HIRC_DIAG_HPP
#define HIRC_DIAG_HPP

#include <cstdlib>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace hirc {

struct SourceLoc {
  int line = 0;
  int col = 0;
};

struct SourceSpan {
  std::string file;
  SourceLoc begin;
  SourceLoc end;

  bool valid() const { return begin.line > 0; }
};

enum class Severity { Error, Warning };

// Shared by parser, verifier and simulator. `cls` is a stable machine
// readable error class, `message` is for humans.
struct Diagnostic {
  Severity severity = Severity::Error;
  std::string cls;
  SourceSpan loc;
  std::string message;
  std::vector<SourceSpan> related;
};

inline bool hasErrors(const std::vector<Diagnostic> &diags) {
  for (auto &d : diags)
    if (d.severity == Severity::Error)
      return true;
  return false;
}

inline size_t errorCount(const std::vector<Diagnostic> &diags) {
  size_t n = 0;
  for (auto &d : diags)
    n += d.severity == Severity::Error;
  return n;
}

inline bool colorEnabled() {
  const char *env = std::getenv("HIRC_COLOR");
  return !(env && std::string(env) == "0");
}

// file:line:col: error[CLASS]: message
inline void printDiagnostic(std::ostream &os, const Diagnostic &d,
                            bool color = false) {
  if (!d.loc.file.empty() || d.loc.valid())
    os << d.loc.file << ":" << d.loc.begin.line << ":" << d.loc.begin.col
       << ": ";
  const char *sev = d.severity == Severity::Error ? "error" : "warning";
  if (color)
    os << (d.severity == Severity::Error ? "\033[31m" : "\033[33m") << sev
       << "[" << d.cls << "]\033[0m: ";
  else
    os << sev << "[" << d.cls << "]: ";
  os << d.message << "\n";
}

inline std::string renderDiagnostics(const std::vector<Diagnostic> &diags,
                                     bool color = false) {
  std::ostringstream os;
  for (auto &d : diags)
    printDiagnostic(os, d, color);
  return os.str();
}

} // namespace hirc

#endif
