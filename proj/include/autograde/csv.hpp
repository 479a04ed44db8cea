#pragma once

// Minimal RFC-4180 reader/writer. Quoted fields may contain commas, doubled
// quotes and line breaks; records end at LF or CRLF.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "autograde/error.hpp"

namespace autograde::csv {

struct Record {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based line on which the record starts
};

inline std::vector<Record> parse(std::string_view text) {
  std::vector<Record> records;
  std::size_t i = 0;
  std::size_t line = 1;
  const std::size_t n = text.size();

  while (i < n) {
    Record rec;
    rec.line = line;
    std::string field;
    bool record_done = false;
    while (!record_done) {
      field.clear();
      if (i < n && text[i] == '"') {
        const std::size_t open_line = line;
        ++i;
        bool closed = false;
        while (i < n) {
          const char c = text[i];
          if (c == '"') {
            if (i + 1 < n && text[i + 1] == '"') {
              field.push_back('"');
              i += 2;
              continue;
            }
            ++i;
            closed = true;
            break;
          }
          if (c == '\n') ++line;
          field.push_back(c);
          ++i;
        }
        if (!closed) throw ParseError("unterminated quoted field", open_line);
        if (i < n && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
          throw ParseError("unexpected character after closing quote", line);
        }
      } else {
        while (i < n && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
          if (text[i] == '"') throw ParseError("quote inside unquoted field", line);
          field.push_back(text[i]);
          ++i;
        }
      }
      rec.fields.push_back(field);

      if (i >= n) {
        record_done = true;
      } else if (text[i] == ',') {
        ++i;
      } else if (text[i] == '\r') {
        if (i + 1 < n && text[i + 1] == '\n') {
          i += 2;
        } else {
          throw ParseError("bare carriage return", line);
        }
        ++line;
        record_done = true;
      } else {  // '\n'
        ++i;
        ++line;
        record_done = true;
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

inline std::string quote(std::string_view field) {
  std::string out;
  out.reserve(field.size() + 2);
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

// Quotes only when needed.
inline std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  return quote(field);
}

inline std::string join_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += escape(fields[i]);
  }
  out.push_back('\n');
  return out;
}

}  // namespace autograde::csv
