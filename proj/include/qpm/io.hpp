#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "qpm/apodization.hpp"
#include "qpm/dispersion.hpp"
#include "qpm/measurement.hpp"

namespace qpm::io {

// Dispersion tables: blocks introduced by `# mode=<label> unit=<um|nm>`, then
// `wavelength,index` rows. Other `#` lines and blank lines are ignored.
std::map<std::string, ModeTable> parse_dispersion(std::istream& in);
DispersionModel read_dispersion_file(const std::filesystem::path& path);
void write_dispersion(std::ostream& out, const std::map<std::string, ModeTable>& tables);

// Domain sequences: `# Lc_um=<v> frame=<demodulated|physical> N=<n>` followed by
// one orientation (1 or -1) per line.
DomainSequence parse_sequence(std::istream& in);
DomainSequence read_sequence_file(const std::filesystem::path& path);
void write_sequence(std::ostream& out, const DomainSequence& seq);

/// `signal_bin_start_ps,idler_bin_start_ps,count` for every nonzero bin.
void write_histogram_csv(std::ostream& out, const CoincidenceHistogram& h);

/// Shortest decimal representation that round-trips.
std::string format_double(double v);

}  // namespace qpm::io
