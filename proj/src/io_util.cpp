#include "kb2text/io_util.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "kb2text/error.hpp"

namespace kb2text {

namespace fs = std::filesystem;

void atomic_write_file(const fs::path& path, const std::string& contents) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) {
            std::remove(tmp.string().c_str());
            throw IoError("write failed: " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        std::remove(tmp.string().c_str());
        throw IoError("rename failed: " + tmp.string() + " -> " + path.string() + ": " +
                      ec.message());
    }
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void for_each_line(const fs::path& path,
                   const std::function<void(const std::string&, long)>& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        fn(line, line_no);
    }
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::vector<std::string> lines;
    for_each_line(path, [&](const std::string& l, long) { lines.push_back(l); });
    return lines;
}

}  // namespace kb2text
