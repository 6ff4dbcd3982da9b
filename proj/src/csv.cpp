/*
 Copyright 2026 The dlmpc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#include "dlmpc/csv.hpp"

#include <array>
#include <charconv>

#include "dlmpc/error.hpp"

namespace dlmpc {

std::string format_number(double value) {
    std::array<char, 32> buf{};
    const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc()) throw Error(ErrorKind::InvalidTrajectory, "number formatting failed");
    return std::string(buf.data(), end);
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw Error(ErrorKind::Config, "cannot write " + path);
    for (const auto& h : header) cell(h);
    end_row();
}

CsvWriter& CsvWriter::cell(const std::string& text) {
    if (!first_) out_ << ',';
    out_ << text;
    first_ = false;
    return *this;
}

CsvWriter& CsvWriter::cell(double value) { return cell(format_number(value)); }

CsvWriter& CsvWriter::cell(int value) { return cell(std::to_string(value)); }

CsvWriter& CsvWriter::blank() { return cell(std::string()); }

void CsvWriter::end_row() {
    out_ << '\n';
    first_ = true;
}

}  // namespace dlmpc
