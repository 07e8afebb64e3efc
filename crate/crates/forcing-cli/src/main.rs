fn main() {
    println!("forcing CLI placeholder");
}
