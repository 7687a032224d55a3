#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "evtrack/dvs.hpp"
#include "evtrack/error.hpp"

static_assert(std::endian::native == std::endian::little, "evb codec assumes a little-endian host");

namespace evtrack {

void write_events_csv(std::ostream& out, const EventStream& events) {
  out << "t,x,y,p\n";
  out << std::fixed << std::setprecision(9);
  for (const auto& e : events)
    out << e.t << ',' << e.x << ',' << e.y << ',' << static_cast<int>(e.polarity) << '\n';
}

namespace {

template <typename T>
T parse_field(const std::string& field, std::size_t line, const char* name) {
  T value{};
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw ParseError(std::string("bad ") + name + " '" + field + "'", "line " + std::to_string(line));
  return value;
}

}  // namespace

EventStream read_events_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "t,x,y,p")
    throw ParseError("missing header 't,x,y,p'", "line 1");
  EventStream events;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::array<std::string, 4> f;
    std::stringstream ss(line);
    std::size_t i = 0;
    for (std::string tok; std::getline(ss, tok, ','); ++i) {
      if (i >= 4) throw ParseError("too many fields", "line " + std::to_string(lineno));
      f[i] = tok;
    }
    if (i != 4) throw ParseError("expected 4 fields", "line " + std::to_string(lineno));
    const double t = parse_field<double>(f[0], lineno, "t");
    const long x = parse_field<long>(f[1], lineno, "x");
    const long y = parse_field<long>(f[2], lineno, "y");
    const int p = parse_field<int>(f[3], lineno, "p");
    if (x < 0 || y < 0 || x > 65535 || y > 65535)
      throw ParseError("coordinate out of range", "line " + std::to_string(lineno));
    if (p != 1 && p != -1) throw ParseError("polarity must be +1 or -1", "line " + std::to_string(lineno));
    if (!events.empty() && t < events.back().t)
      throw ParseError("timestamps not sorted", "line " + std::to_string(lineno));
    events.push_back({t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                      static_cast<std::int8_t>(p)});
  }
  return events;
}

void write_events_csv(const std::filesystem::path& path, const EventStream& events) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path.string());
  write_events_csv(out, events);
}

EventStream read_events_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  return read_events_csv(in);
}

constexpr std::array<char, 4> kEvbMagic{'E', 'V', 'B', '1'};
constexpr std::size_t kEvbRecord = 8 + 2 + 2 + 1;

void write_events_evb(std::ostream& out, const EventStream& events) {
  out.write(kEvbMagic.data(), kEvbMagic.size());
  std::array<char, kEvbRecord> rec{};
  for (const auto& e : events) {
    std::memcpy(rec.data(), &e.t, 8);
    std::memcpy(rec.data() + 8, &e.x, 2);
    std::memcpy(rec.data() + 10, &e.y, 2);
    std::memcpy(rec.data() + 12, &e.polarity, 1);
    out.write(rec.data(), rec.size());
  }
}

EventStream read_events_evb(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != 4 || magic != kEvbMagic) throw ParseError("missing EVB1 magic", "offset 0");
  EventStream events;
  std::array<char, kEvbRecord> rec{};
  std::size_t offset = 4;
  while (true) {
    in.read(rec.data(), rec.size());
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got == 0) break;
    if (got != kEvbRecord) throw ParseError("truncated record", "offset " + std::to_string(offset));
    Event e;
    std::memcpy(&e.t, rec.data(), 8);
    std::memcpy(&e.x, rec.data() + 8, 2);
    std::memcpy(&e.y, rec.data() + 10, 2);
    std::memcpy(&e.polarity, rec.data() + 12, 1);
    if (e.polarity != 1 && e.polarity != -1)
      throw ParseError("bad polarity", "offset " + std::to_string(offset + 12));
    events.push_back(e);
    offset += kEvbRecord;
  }
  return events;
}

void write_events_evb(const std::filesystem::path& path, const EventStream& events) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open " + path.string());
  write_events_evb(out, events);
}

EventStream read_events_evb(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  return read_events_evb(in);
}

}  // namespace evtrack
