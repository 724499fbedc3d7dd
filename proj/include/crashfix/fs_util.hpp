#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace crashfix {

    std::string read_file(const std::filesystem::path& p);
    void write_file(const std::filesystem::path& p, std::string_view contents);

    /// Rejects absolute paths and any `..` component.
    bool is_safe_relative(std::string_view rel);

    /// Owns a freshly created directory and removes it on destruction.
    class temp_dir {
      public:
        explicit temp_dir(std::string_view prefix = "crashfix");
        ~temp_dir();

        temp_dir(const temp_dir&) = delete;
        temp_dir& operator=(const temp_dir&) = delete;
        temp_dir(temp_dir&& other) noexcept;
        temp_dir& operator=(temp_dir&& other) noexcept;

        const std::filesystem::path& path() const noexcept { return path_; }
        void keep() noexcept { keep_ = true; }

      private:
        std::filesystem::path path_{};
        bool keep_{false};
    };

}  // namespace crashfix
