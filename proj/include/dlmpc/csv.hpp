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
#ifndef DLMPC_CSV_HPP
#define DLMPC_CSV_HPP

#include <fstream>
#include <string>
#include <vector>

namespace dlmpc {

/// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

/// Minimal CSV writer with a mandatory header row.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);

    CsvWriter& cell(const std::string& text);
    CsvWriter& cell(double value);
    CsvWriter& cell(int value);
    CsvWriter& blank();
    void end_row();

private:
    std::ofstream out_;
    bool first_ = true;
};

}  // namespace dlmpc

#endif  // DLMPC_CSV_HPP
