#include "crashfix/fs_util.hpp"

#include <fstream>
#include <iterator>
#include <stdexcept>
#include <system_error>
#include <vector>

extern "C" {
#include <stdlib.h>
}

namespace fs = std::filesystem;

namespace crashfix {

    std::string read_file(const fs::path& p) {
        std::ifstream in{p, std::ios::binary};
        if (!in) throw std::runtime_error("cannot read " + p.string());
        return std::string{std::istreambuf_iterator<char>{in}, std::istreambuf_iterator<char>{}};
    }

    void write_file(const fs::path& p, std::string_view contents) {
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        std::ofstream out{p, std::ios::binary | std::ios::trunc};
        if (!out) throw std::runtime_error("cannot write " + p.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw std::runtime_error("short write to " + p.string());
    }

    bool is_safe_relative(std::string_view rel) {
        if (rel.empty()) return false;
        fs::path p{std::string{rel}};
        if (p.is_absolute() || p.has_root_name() || p.has_root_directory()) return false;
        for (const auto& part : p)
            if (part == "..") return false;
        return true;
    }

    temp_dir::temp_dir(std::string_view prefix) {
        auto templ = (fs::temp_directory_path() / (std::string{prefix} + "-XXXXXX")).string();
        std::vector<char> buf(templ.begin(), templ.end());
        buf.push_back('\0');
        if (::mkdtemp(buf.data()) == nullptr)
            throw std::system_error(errno, std::generic_category(), "mkdtemp " + templ);
        path_ = fs::path{buf.data()};
    }

    temp_dir::~temp_dir() {
        if (!path_.empty() && !keep_) {
            std::error_code ec;
            fs::remove_all(path_, ec);
        }
    }

    temp_dir::temp_dir(temp_dir&& other) noexcept : path_(std::move(other.path_)), keep_(other.keep_) {
        other.path_.clear();
    }

    temp_dir& temp_dir::operator=(temp_dir&& other) noexcept {
        if (this != &other) {
            if (!path_.empty() && !keep_) {
                std::error_code ec;
                fs::remove_all(path_, ec);
            }
            path_ = std::move(other.path_);
            keep_ = other.keep_;
            other.path_.clear();
        }
        return *this;
    }

}  // namespace crashfix
