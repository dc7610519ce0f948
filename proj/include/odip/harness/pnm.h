#ifndef ODIP_HARNESS_PNM_H_
#define ODIP_HARNESS_PNM_H_

#include <string>

#include "odip/core/image.h"

namespace odip::harness {

// Binary PPM (P6, maxval 255), with an optional one-line header comment.
std::string EncodePpm(const Image& image, const std::string& comment = "");
// Throws Error(kIo) on anything but a well-formed 8-bit P6 stream.
Image DecodePpm(const std::string& bytes);

void WritePpm(const std::string& path, const Image& image,
              const std::string& comment = "");
Image ReadPpm(const std::string& path);

}  // namespace odip::harness

#endif  // ODIP_HARNESS_PNM_H_
