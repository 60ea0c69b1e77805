pub mod trace_check;
