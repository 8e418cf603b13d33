#ifndef HIRC_VCD_HPP
#define HIRC_VCD_HPP

#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "hirc/sim.hpp"

namespace hirc {

// Renders a recorded simulation trace as a VCD waveform. Identifiers are
// assigned in first-appearance order so output is deterministic.
inline void writeVcd(std::ostream &os, const std::vector<TraceEntry> &trace) {
  std::map<std::string, std::string> ids;
  std::vector<std::string> order;
  for (auto &e : trace)
    if (!ids.count(e.name)) {
      ids[e.name] = "s" + std::to_string(order.size());
      order.push_back(e.name);
    }
  os << "$timescale 1ns $end\n";
  os << "$scope module sim $end\n";
  for (auto &n : order)
    os << "$var wire 64 " << ids[n] << " " << n << " $end\n";
  os << "$upscope $end\n$enddefinitions $end\n";
  int64_t cycle = -1;
  for (auto &e : trace) {
    if (e.cycle != cycle) {
      cycle = e.cycle;
      os << "#" << cycle << "\n";
    }
    os << "b";
    for (int b = 63; b >= 0; --b)
      os << (((uint64_t)e.value >> b) & 1);
    os << " " << ids[e.name] << "\n";
  }
  if (cycle >= 0)
    os << "#" << (cycle + 1) << "\n";
}

inline void writeTraceCsv(std::ostream &os,
                          const std::vector<TraceEntry> &trace) {
  os << "cycle,signal,value\n";
  for (auto &e : trace)
    os << e.cycle << "," << e.name << "," << e.value << "\n";
}

} // namespace hirc

#endif
