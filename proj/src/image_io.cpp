#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "camb/error.hpp"
#include "camb/tensor.hpp"

namespace camb {

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error reading '" + path + "'");
  return bytes;
}

std::string describe_magic(const std::vector<unsigned char>& bytes) {
  std::ostringstream os;
  const std::size_t n = std::min<std::size_t>(bytes.size(), 4);
  os << "magic bytes [";
  for (std::size_t i = 0; i < n; ++i) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%s%02x", i ? " " : "", bytes[i]);
    os << buf;
  }
  os << "] \"";
  for (std::size_t i = 0; i < n; ++i) os << (std::isprint(bytes[i]) ? static_cast<char>(bytes[i]) : '.');
  os << "\"";
  return os.str();
}

// Netpbm header tokens: whitespace separated, '#' starts a comment to end of line.
class PnmHeader {
 public:
  PnmHeader(const std::vector<unsigned char>& bytes, const std::string& path)
      : bytes_(bytes), path_(path) {}

  unsigned long next_number() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) {
      throw FormatError("malformed PNM header in '" + path_ + "'");
    }
    unsigned long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_++] - '0');
      if (value > 0xFFFFFFFFul) throw FormatError("PNM header value overflow in '" + path_ + "'");
    }
    return value;
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw FormatError("malformed PNM header in '" + path_ + "'");
    }
    return pos_ + 1;
  }

  void skip(std::size_t n) { pos_ += n; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<unsigned char>& bytes_;
  const std::string& path_;
  std::size_t pos_ = 0;
};

ImageTensor decode_pnm(const std::vector<unsigned char>& bytes, const std::string& path) {
  const std::size_t channels = bytes[1] == '5' ? 1 : 3;
  PnmHeader header(bytes, path);
  header.skip(2);
  const unsigned long width = header.next_number();
  const unsigned long height = header.next_number();
  const unsigned long maxval = header.next_number();
  if (width == 0 || height == 0) throw FormatError("zero-sized image in '" + path + "'");
  if (maxval == 0 || maxval > 65535) {
    throw FormatError("unsupported PNM maxval " + std::to_string(maxval) + " in '" + path + "'");
  }
  const std::size_t offset = header.raster_offset();
  const std::size_t sample_bytes = maxval > 255 ? 2 : 1;
  const std::size_t count = std::size_t{width} * height * channels;
  if (bytes.size() < offset + count * sample_bytes) {
    throw FormatError("truncated raster in '" + path + "'");
  }
  std::vector<double> data(count);
  const double scale = static_cast<double>(maxval);
  const unsigned char* raster = bytes.data() + offset;
  for (std::size_t i = 0; i < count; ++i) {
    unsigned value = sample_bytes == 2 ? (unsigned{raster[2 * i]} << 8) | raster[2 * i + 1] : raster[i];
    if (value > maxval) value = static_cast<unsigned>(maxval);
    data[i] = value / scale;
  }
  return ImageTensor(height, width, channels, std::move(data));
}

ImageTensor decode_png(const std::string& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw FormatError("cannot decode PNG '" + path + "': " + image.message);
  }
  if (image.format & PNG_FORMAT_FLAG_ALPHA) {
    png_image_free(&image);
    throw FormatError("PNG with alpha channel is not supported: '" + path + "'");
  }
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw FormatError("16-bit PNG is not supported: '" + path + "'");
  }
  const std::size_t channels = (image.format & PNG_FORMAT_FLAG_COLOR) ? 3 : 1;
  image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<unsigned char> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string message = image.message;
    png_image_free(&image);
    throw FormatError("cannot decode PNG '" + path + "': " + message);
  }
  std::vector<double> data(buffer.size());
  for (std::size_t i = 0; i < buffer.size(); ++i) data[i] = buffer[i] / 255.0;
  return ImageTensor(image.height, image.width, channels, std::move(data));
}

bool has_png_extension(const std::string& path) {
  if (path.size() < 4) return false;
  std::string ext = path.substr(path.size() - 4);
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".png";
}

}  // namespace

ImageTensor load_image(const std::string& path) {
  const std::vector<unsigned char> bytes = read_file(path);
  static constexpr unsigned char png_magic[] = {0x89, 'P', 'N', 'G'};
  if (bytes.size() >= 4 && std::equal(std::begin(png_magic), std::end(png_magic), bytes.begin())) {
    return decode_png(path);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) {
    return decode_pnm(bytes, path);
  }
  throw FormatError("unsupported image format in '" + path + "': " + describe_magic(bytes));
}

void save_image(const ImageTensor& img, const std::string& path) {
  if (img.empty()) throw ParameterError("cannot save an empty image");
  std::vector<unsigned char> raster(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) raster[i] = quantize8(img[i]);

  if (has_png_extension(path)) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width());
    image.height = static_cast<png_uint_32>(img.height());
    image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&image, path.c_str(), 0, raster.data(), 0, nullptr)) {
      throw IoError("cannot write PNG '" + path + "': " + image.message);
    }
    return;
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << (img.channels() == 3 ? "P6" : "P5") << "\n" << img.width() << " " << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!out) throw IoError("error writing '" + path + "'");
}

}  // namespace camb
