fn main() -> ! {
    melshift::cli::main()
}
