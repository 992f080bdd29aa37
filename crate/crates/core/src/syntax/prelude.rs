/// Definitions available to every surface program.
pub const PRELUDE: &str = "\
def zero = !(\\z. \\s. der z);
def succ = \\n. !(\\z. \\s. (der s) n);
def pred = \\n. (der n) !zero !(\\m. m);
def fix = \\f. let w = !(\\y. (der f) !((der y) y)) in (der w) w;
0
";
