#include "evtrack/frame.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "evtrack/error.hpp"

namespace evtrack {

double Frame::mean() const {
  if (pixels.empty()) return 0.0;
  return std::accumulate(pixels.begin(), pixels.end(), 0.0) / static_cast<double>(pixels.size());
}

void write_pgm(const std::filesystem::path& path, const Frame& frame) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
  out << "P5\n" << frame.width << ' ' << frame.height << "\n255\n";
  std::vector<unsigned char> bytes(frame.pixels.size());
  std::transform(frame.pixels.begin(), frame.pixels.end(), bytes.begin(), [](double v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  });
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

namespace {

std::string next_token(std::istream& in) {
  std::string tok;
  while (in) {
    const int c = in.peek();
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  in >> tok;
  return tok;
}

}  // namespace

Frame read_pgm(const std::filesystem::path& path, int index) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  if (next_token(in) != "P5") throw ParseError("not a binary PGM", "offset 0");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token(in));
    h = std::stoi(next_token(in));
    maxval = std::stoi(next_token(in));
  } catch (const std::exception&) {
    throw ParseError("bad PGM header in " + path.string(), "offset 2");
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw ParseError("unsupported PGM geometry", "offset 2");
  in.get();  // single whitespace after maxval
  const auto header = static_cast<long>(in.tellg());
  std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
    throw ParseError("truncated PGM " + path.string(),
                     "offset " + std::to_string(header + in.gcount()));
  Frame f(w, h, index);
  std::transform(bytes.begin(), bytes.end(), f.pixels.begin(),
                 [](unsigned char b) { return b / 255.0; });
  return f;
}

}  // namespace evtrack
