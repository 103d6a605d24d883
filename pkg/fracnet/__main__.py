# lazy way to ignore coverage in this file
if True:  # pragma: no cover
    def main():
        import sys

        from fracnet.fracnet_cmd import FracnetMain

        sys.exit(FracnetMain().run(sys.argv[1:]))

    if __name__ == '__main__':
        main()
