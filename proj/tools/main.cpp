#include <cstdio>

int main() {
  std::puts("typodiff: cli not wired yet");
  return 0;
}
