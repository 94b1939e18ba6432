#!/usr/bin/env python
import argparse

from parsreduce.config import setup_parsreduce, set_config_key


def main(argv=None):
    """
    Persist the default SDP backend

    Usage:
    parsreduce_set_backend -b cvxpy
    """
    parser = argparse.ArgumentParser(description="Set the default SDP backend.",
                                     epilog="Stored in config.json of the ParsReduce home directory "
                                            "(~/.parsreduce or PARS_REDUCE_HOME_DIR).")

    parser.add_argument("-b", "--backend", choices=["reference", "cvxpy"], help="SDP backend", required=True)

    parser.add_argument("-mi", "--max_iters", type=int, help="Iteration cap of the SDP solver", default=None)

    args = parser.parse_args(argv)

    setup_parsreduce()  # create config file if not exists
    set_config_key("sdp_backend", args.backend)
    if args.max_iters is not None:
        if args.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        set_config_key("sdp_max_iters", args.max_iters)

    print(f"Default SDP backend set to '{args.backend}'.")


if __name__ == "__main__":
    main()
