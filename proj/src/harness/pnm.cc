#include "odip/harness/pnm.h"

#include <cctype>
#include <fstream>
#include <sstream>

#include "odip/core/error.h"
#include "odip/harness/persistence.h"

namespace odip::harness {

std::string EncodePpm(const Image& image, const std::string& comment) {
  std::string out = "P6\n";
  if (!comment.empty()) out += "# " + comment + "\n";
  out += std::to_string(image.width()) + " " +
         std::to_string(image.height()) + "\n255\n";
  out.append(image.bytes().begin(), image.bytes().end());
  return out;
}

namespace {

// Reads one header token, skipping whitespace and comments.
std::string HeaderToken(const std::string& bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < bytes.size() &&
         !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    ++pos;
  }
  return bytes.substr(start, pos - start);
}

int HeaderInt(const std::string& bytes, std::size_t& pos) {
  const std::string token = HeaderToken(bytes, pos);
  if (token.empty() || token.size() > 6 ||
      token.find_first_not_of("0123456789") != std::string::npos) {
    throw Error(ErrorCode::kIo, "bad PPM header field '" + token + "'");
  }
  return std::stoi(token);
}

}  // namespace

Image DecodePpm(const std::string& bytes) {
  std::size_t pos = 0;
  if (HeaderToken(bytes, pos) != "P6") {
    throw Error(ErrorCode::kIo, "not a P6 PPM stream");
  }
  const int width = HeaderInt(bytes, pos);
  const int height = HeaderInt(bytes, pos);
  if (HeaderInt(bytes, pos) != 255) {
    throw Error(ErrorCode::kIo, "only maxval 255 is supported");
  }
  ++pos;  // single whitespace byte before the raster
  const std::size_t n = static_cast<std::size_t>(width) * height * 3;
  if (width <= 0 || height <= 0 || bytes.size() != pos + n) {
    throw Error(ErrorCode::kIo, "PPM raster size mismatch");
  }
  Image image(width, height);
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end(),
            image.mutable_bytes().begin());
  return image;
}

void WritePpm(const std::string& path, const Image& image,
              const std::string& comment) {
  WriteFileAtomic(path, EncodePpm(image, comment));
}

Image ReadPpm(const std::string& path) { return DecodePpm(ReadFile(path)); }

}  // namespace odip::harness
