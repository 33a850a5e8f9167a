#include "coldbench/util/files.hpp"

#include <zlib.h>

#include <fstream>
#include <sstream>

#include "coldbench/util/error.hpp"

namespace coldbench {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

void emit_lines(std::string& pending, bool flush_tail,
                const std::function<void(std::string_view, std::size_t)>& fn,
                std::size_t& line_no) {
  std::size_t start = 0;
  for (;;) {
    std::size_t nl = pending.find('\n', start);
    if (nl == std::string::npos) break;
    std::string_view line(pending.data() + start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    fn(line, ++line_no);
    start = nl + 1;
  }
  pending.erase(0, start);
  if (flush_tail && !pending.empty()) {
    std::string_view line(pending);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    fn(line, ++line_no);
    pending.clear();
  }
}

}  // namespace

void for_each_line(const fs::path& path,
                   const std::function<void(std::string_view, std::size_t)>& fn) {
  std::size_t line_no = 0;
  std::string pending;
  if (path.extension() == ".gz") {
    gzFile gz = gzopen(path.string().c_str(), "rb");
    if (gz == nullptr) throw DataError("cannot open " + path.string());
    char buf[1 << 16];
    int n = 0;
    while ((n = gzread(gz, buf, sizeof(buf))) > 0) {
      pending.append(buf, static_cast<std::size_t>(n));
      emit_lines(pending, false, fn, line_no);
    }
    int err = 0;
    const char* msg = gzerror(gz, &err);
    std::string error_text = (err != Z_OK && err != Z_STREAM_END && msg) ? msg : "";
    gzclose(gz);
    if (n < 0 || !error_text.empty()) {
      throw DataError("gzip read error in " + path.string() + ": " + error_text);
    }
  } else {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    char buf[1 << 16];
    while (in) {
      in.read(buf, sizeof(buf));
      pending.append(buf, static_cast<std::size_t>(in.gcount()));
      emit_lines(pending, false, fn, line_no);
    }
  }
  emit_lines(pending, true, fn, line_no);
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace coldbench
