#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "retrack/box.hpp"
#include "retrack/embedding.hpp"
#include "retrack/raster.hpp"

namespace retrack {

// Malformed or unreadable input data; the message carries path and line.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace io {

// Shortest round-trip decimal form, locale-independent; identical input bits
// always serialize to identical text.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline double parse_double(std::string_view field, const std::string& path, std::size_t line_no) {
  const std::string_view t = trim(field);
  double value = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size())
    throw DataError(path + ":" + std::to_string(line_no) + ": expected a number, got '" +
                    std::string(field) + "'");
  return value;
}

inline long long parse_int(std::string_view field, const std::string& path, std::size_t line_no) {
  const std::string_view t = trim(field);
  long long value = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size())
    throw DataError(path + ":" + std::to_string(line_no) + ": expected an integer, got '" +
                    std::string(field) + "'");
  return value;
}

// Reads a whole text file; non-openable files raise DataError.
inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << content;
  if (!out) throw DataError("write failed for " + path);
}

// Calls fn(line_no, line) for each non-empty, non-comment line.
template <typename Fn>
void for_each_data_line(const std::string& path, Fn&& fn) {
  const std::string content = read_text_file(path);
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= content.size()) {
    const std::size_t end = content.find('\n', start);
    std::string_view line(content.data() + start,
                          (end == std::string::npos ? content.size() : end) - start);
    ++line_no;
    start = (end == std::string::npos) ? content.size() + 1 : end + 1;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    fn(line_no, line);
  }
}

inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const char c : data) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

// MOTChallenge ground-truth row: frame,id,x,y,w,h,conf,class,visibility.
// Frames and ids are 1-based in the file.
struct GtRow {
  std::size_t frame = 0;
  int id = 0;
  Box box;
  double conf = 1.0;
  int cls = 1;
  double visibility = 1.0;
};

inline std::vector<GtRow> read_mot_gt(const std::string& path) {
  std::vector<GtRow> rows;
  for_each_data_line(path, [&](std::size_t line_no, std::string_view line) {
    const auto fields = split(line, ',');
    if (fields.size() != 9)
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected 9 comma-separated fields, got " +
                      std::to_string(fields.size()));
    GtRow row;
    row.frame = static_cast<std::size_t>(parse_int(fields[0], path, line_no));
    row.id = static_cast<int>(parse_int(fields[1], path, line_no));
    const double x = parse_double(fields[2], path, line_no);
    const double y = parse_double(fields[3], path, line_no);
    const double w = parse_double(fields[4], path, line_no);
    const double h = parse_double(fields[5], path, line_no);
    if (!(w > 0.0) || !(h > 0.0))
      throw DataError(path + ":" + std::to_string(line_no) + ": box must have positive size");
    row.box = Box(x, y, w, h);
    row.conf = parse_double(fields[6], path, line_no);
    row.cls = static_cast<int>(parse_int(fields[7], path, line_no));
    row.visibility = parse_double(fields[8], path, line_no);
    rows.push_back(row);
  });
  return rows;
}

inline std::string format_mot_gt(const std::vector<GtRow>& rows) {
  std::string out;
  for (const GtRow& r : rows) {
    out += std::to_string(r.frame);
    out += ',';
    out += std::to_string(r.id);
    out += ',';
    out += format_double(r.box.x);
    out += ',';
    out += format_double(r.box.y);
    out += ',';
    out += format_double(r.box.w);
    out += ',';
    out += format_double(r.box.h);
    out += ',';
    out += format_double(r.conf);
    out += ',';
    out += std::to_string(r.cls);
    out += ',';
    out += format_double(r.visibility);
    out += '\n';
  }
  return out;
}

inline void write_mot_gt(const std::string& path, const std::vector<GtRow>& rows) {
  write_text_file(path, format_mot_gt(rows));
}

// MOTChallenge result row: frame,id,x,y,w,h,conf,-1,-1,-1 (1-based frame/id).
struct ResultRow {
  std::size_t frame = 0;
  int id = 0;
  Box box;
  double conf = 1.0;
};

inline std::vector<ResultRow> read_mot_results(const std::string& path) {
  std::vector<ResultRow> rows;
  for_each_data_line(path, [&](std::size_t line_no, std::string_view line) {
    const auto fields = split(line, ',');
    if (fields.size() < 7)
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected at least 7 comma-separated fields");
    ResultRow row;
    row.frame = static_cast<std::size_t>(parse_int(fields[0], path, line_no));
    row.id = static_cast<int>(parse_int(fields[1], path, line_no));
    const double x = parse_double(fields[2], path, line_no);
    const double y = parse_double(fields[3], path, line_no);
    const double w = parse_double(fields[4], path, line_no);
    const double h = parse_double(fields[5], path, line_no);
    if (!(w > 0.0) || !(h > 0.0))
      throw DataError(path + ":" + std::to_string(line_no) + ": box must have positive size");
    row.box = Box(x, y, w, h);
    row.conf = parse_double(fields[6], path, line_no);
    rows.push_back(row);
  });
  return rows;
}

inline std::string format_mot_results(const std::vector<ResultRow>& rows) {
  std::string out = "# frame,id,x,y,w,h,conf,-1,-1,-1\n";
  for (const ResultRow& r : rows) {
    out += std::to_string(r.frame);
    out += ',';
    out += std::to_string(r.id);
    out += ',';
    out += format_double(r.box.x);
    out += ',';
    out += format_double(r.box.y);
    out += ',';
    out += format_double(r.box.w);
    out += ',';
    out += format_double(r.box.h);
    out += ',';
    out += format_double(r.conf);
    out += ",-1,-1,-1\n";
  }
  return out;
}

inline void write_mot_results(const std::string& path, const std::vector<ResultRow>& rows) {
  write_text_file(path, format_mot_results(rows));
}

// Recorded detector-backend answers. Frames here are the tracker's internal
// 0-based indices. Q rows are per-anchor outputs, D rows frame detections.
struct ReplayQueryRow {
  std::size_t frame = 0;
  std::size_t anchor_id = 0;
  double conf = 0.0;
  Box box;
};

struct ReplayDetectRow {
  std::size_t frame = 0;
  double conf = 0.0;
  Box box;
};

struct ReplayData {
  std::vector<ReplayQueryRow> queries;
  std::vector<ReplayDetectRow> detects;
};

inline ReplayData read_replay(const std::string& path) {
  ReplayData data;
  for_each_data_line(path, [&](std::size_t line_no, std::string_view line) {
    const auto fields = split(line, ',');
    const auto bad = [&](const char* what) {
      return DataError(path + ":" + std::to_string(line_no) + ": " + what);
    };
    if (fields.empty()) throw bad("empty record");
    const std::string_view tag = trim(fields[0]);
    if (tag == "Q") {
      if (fields.size() != 8) throw bad("Q record needs 8 fields");
      ReplayQueryRow row;
      row.frame = static_cast<std::size_t>(parse_int(fields[1], path, line_no));
      row.anchor_id = static_cast<std::size_t>(parse_int(fields[2], path, line_no));
      row.conf = parse_double(fields[3], path, line_no);
      row.box = Box(parse_double(fields[4], path, line_no), parse_double(fields[5], path, line_no),
                    parse_double(fields[6], path, line_no), parse_double(fields[7], path, line_no));
      data.queries.push_back(row);
    } else if (tag == "D") {
      if (fields.size() != 7) throw bad("D record needs 7 fields");
      ReplayDetectRow row;
      row.frame = static_cast<std::size_t>(parse_int(fields[1], path, line_no));
      row.conf = parse_double(fields[2], path, line_no);
      row.box = Box(parse_double(fields[3], path, line_no), parse_double(fields[4], path, line_no),
                    parse_double(fields[5], path, line_no), parse_double(fields[6], path, line_no));
      data.detects.push_back(row);
    } else {
      throw bad("record must start with Q or D");
    }
  });
  return data;
}

inline std::string format_replay_query(std::size_t frame, std::size_t anchor_id, double conf,
                                       const Box& b) {
  std::string out = "Q,";
  out += std::to_string(frame);
  out += ',';
  out += std::to_string(anchor_id);
  out += ',';
  out += format_double(conf);
  out += ',';
  out += format_double(b.x);
  out += ',';
  out += format_double(b.y);
  out += ',';
  out += format_double(b.w);
  out += ',';
  out += format_double(b.h);
  out += '\n';
  return out;
}

inline std::string format_replay_detect(std::size_t frame, double conf, const Box& b) {
  std::string out = "D,";
  out += std::to_string(frame);
  out += ',';
  out += format_double(conf);
  out += ',';
  out += format_double(b.x);
  out += ',';
  out += format_double(b.y);
  out += ',';
  out += format_double(b.w);
  out += ',';
  out += format_double(b.h);
  out += '\n';
  return out;
}

// Embedding sidecar row: frame,id,v1,...,vD (1-based frame).
struct EmbeddingRow {
  std::size_t frame = 0;
  int id = 0;
  Embedding values;
};

inline std::vector<EmbeddingRow> read_embeddings(const std::string& path) {
  std::vector<EmbeddingRow> rows;
  for_each_data_line(path, [&](std::size_t line_no, std::string_view line) {
    const auto fields = split(line, ',');
    if (fields.size() < 3)
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": embedding row needs frame, id and at least one value");
    EmbeddingRow row;
    row.frame = static_cast<std::size_t>(parse_int(fields[0], path, line_no));
    row.id = static_cast<int>(parse_int(fields[1], path, line_no));
    row.values.reserve(fields.size() - 2);
    for (std::size_t i = 2; i < fields.size(); ++i)
      row.values.push_back(parse_double(fields[i], path, line_no));
    rows.push_back(std::move(row));
  });
  return rows;
}

inline std::string format_embeddings(const std::vector<EmbeddingRow>& rows) {
  std::string out;
  for (const EmbeddingRow& r : rows) {
    out += std::to_string(r.frame);
    out += ',';
    out += std::to_string(r.id);
    for (const double v : r.values) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

inline void write_embeddings(const std::string& path, const std::vector<EmbeddingRow>& rows) {
  write_text_file(path, format_embeddings(rows));
}

// Binary 8-bit PGM (P5).
inline void write_pgm(const std::string& path, const Raster& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw DataError("write failed for " + path);
}

inline Raster read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5") throw DataError(path + ": not a binary PGM (P5) file");
  int w = 0, h = 0, maxval = 0;
  // Header tokens may be separated by whitespace and '#' comments.
  const auto next_int = [&](int& value) {
    std::string tok;
    while (in >> tok) {
      if (tok.front() == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      try {
        value = std::stoi(tok);
      } catch (const std::exception&) {
        throw DataError(path + ": malformed PGM header token '" + tok + "'");
      }
      return;
    }
    throw DataError(path + ": truncated PGM header");
  };
  next_int(w);
  next_int(h);
  next_int(maxval);
  if (w <= 0 || h <= 0 || maxval != 255)
    throw DataError(path + ": unsupported PGM geometry or max value");
  in.get();  // single whitespace after maxval
  Raster img(w, h);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
    throw DataError(path + ": truncated PGM pixel data");
  return img;
}

}  // namespace io
}  // namespace retrack
