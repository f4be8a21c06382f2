#include "qpm/io.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>

#include "qpm/error.hpp"

namespace qpm::io {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_number(std::string_view text, std::size_t line) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
    throw InputError(fmt::format("line {}: '{}' is not a number", line, text));
  return v;
}

// Parses whitespace-separated key=value tokens after a leading '#'.
std::map<std::string, std::string, std::less<>> header_fields(std::string_view line) {
  std::map<std::string, std::string, std::less<>> out;
  line.remove_prefix(1);
  std::istringstream tokens{std::string(line)};
  std::string token;
  while (tokens >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) continue;
    out[token.substr(0, eq)] = token.substr(eq + 1);
  }
  return out;
}

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return in;
}

}  // namespace

std::string format_double(double v) { return fmt::format("{}", v); }

std::map<std::string, ModeTable> parse_dispersion(std::istream& in) {
  std::map<std::string, ModeTable> tables;
  ModeTable* current = nullptr;
  double scale = 1.0;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string_view text = trim(raw);
    if (text.empty()) continue;
    if (text.front() == '#') {
      const auto fields = header_fields(text);
      const auto mode = fields.find("mode");
      if (mode == fields.end()) continue;
      const auto unit = fields.find("unit");
      if (unit == fields.end())
        throw InputError(fmt::format("line {}: mode header without a unit", line));
      if (unit->second == "um") scale = 1.0;
      else if (unit->second == "nm") scale = 1e-3;
      else throw InputError(fmt::format("line {}: unsupported unit '{}'", line, unit->second));
      if (mode->second.empty()) throw InputError(fmt::format("line {}: empty mode label", line));
      if (tables.count(mode->second))
        throw InputError(fmt::format("line {}: duplicate mode '{}'", line, mode->second));
      current = &tables[mode->second];
      continue;
    }
    if (!current) throw InputError(fmt::format("line {}: data before any mode header", line));
    const auto comma = text.find(',');
    if (comma == std::string_view::npos)
      throw InputError(fmt::format("line {}: expected 'wavelength,index'", line));
    const double wavelength = parse_number(text.substr(0, comma), line) * scale;
    if (!current->wavelength_um.empty() && !(wavelength > current->wavelength_um.back()))
      throw InputError(fmt::format("line {}: wavelengths must increase within a mode block", line));
    current->wavelength_um.push_back(wavelength);
    current->index.push_back(parse_number(text.substr(comma + 1), line));
  }
  if (tables.empty()) throw InputError("dispersion file contains no mode blocks");
  return tables;
}

DispersionModel read_dispersion_file(const std::filesystem::path& path) {
  auto in = open(path);
  return DispersionModel(parse_dispersion(in));
}

void write_dispersion(std::ostream& out, const std::map<std::string, ModeTable>& tables) {
  for (const auto& [label, table] : tables) {
    out << "# mode=" << label << " unit=um\n";
    for (std::size_t k = 0; k < table.wavelength_um.size(); ++k) {
      out << format_double(table.wavelength_um[k]) << ',' << format_double(table.index[k])
          << '\n';
    }
  }
}

DomainSequence parse_sequence(std::istream& in) {
  std::string raw;
  std::size_t line = 0;
  std::optional<double> lc;
  std::optional<Frame> frame;
  std::optional<std::size_t> declared;
  std::vector<std::int8_t> signs;
  while (std::getline(in, raw)) {
    ++line;
    const std::string_view text = trim(raw);
    if (text.empty()) continue;
    if (text.front() == '#') {
      if (text.starts_with("# config:")) continue;
      const auto fields = header_fields(text);
      if (auto it = fields.find("Lc_um"); it != fields.end()) lc = parse_number(it->second, line);
      if (auto it = fields.find("frame"); it != fields.end()) frame = frame_from_string(it->second);
      if (auto it = fields.find("N"); it != fields.end()) {
        const double n = parse_number(it->second, line);
        if (n < 1 || n != std::floor(n)) throw InputError(fmt::format("line {}: bad N", line));
        declared = static_cast<std::size_t>(n);
      }
      continue;
    }
    if (text == "1" || text == "+1") signs.push_back(1);
    else if (text == "-1") signs.push_back(-1);
    else throw InputError(fmt::format("line {}: orientation must be 1 or -1", line));
  }
  if (!lc || !frame || !declared)
    throw InputError("sequence header must define Lc_um, frame and N");
  if (signs.size() != *declared)
    throw InputError(fmt::format("header declares N={} but {} domains follow", *declared,
                                 signs.size()));
  return DomainSequence(*lc, std::move(signs), *frame);
}

DomainSequence read_sequence_file(const std::filesystem::path& path) {
  auto in = open(path);
  return parse_sequence(in);
}

void write_sequence(std::ostream& out, const DomainSequence& seq) {
  out << "# Lc_um=" << format_double(seq.domain_length()) << " frame=" << to_string(seq.frame())
      << " N=" << seq.size() << '\n';
  for (auto s : seq.signs()) out << (s > 0 ? "1\n" : "-1\n");
}

void write_histogram_csv(std::ostream& out, const CoincidenceHistogram& h) {
  out << "signal_bin_start_ps,idler_bin_start_ps,count\n";
  for (std::size_t s = 0; s < h.signal_bins; ++s) {
    for (std::size_t i = 0; i < h.idler_bins; ++i) {
      if (const auto c = h.at(s, i); c != 0) {
        out << format_double(h.signal_bin_start(s)) << ',' << format_double(h.idler_bin_start(i))
            << ',' << c << '\n';
      }
    }
  }
}

}  // namespace qpm::io
