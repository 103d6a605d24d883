from fracnet.fracnet_cmd import FracnetMain


def cmd_main(args, extra_config=None, bin_name='fracnet'):
    main = FracnetMain(config_filenames=(), extra_config=extra_config)
    main.BIN_NAME = bin_name
    return main.run(args)


class TestHelp(object):
    def test_help_usage(self, capsys):
        returned = cmd_main(["help"])
        assert returned == 0
        out, err = capsys.readouterr()
        assert "fracnet train " in out
        assert "fracnet help stages" in out

    def test_help_usage_custom_name(self, capsys):
        returned = cmd_main(["help"], bin_name='mytool')
        assert returned == 0
        out, err = capsys.readouterr()
        assert "mytool evaluate " in out

    def test_help_plugin_name(self, capsys):
        plugin = {'XXX': 'tests.sample_plugin:MyCmd'}
        returned = cmd_main(["help"], extra_config={'COMMAND': plugin})
        assert returned == 0
        out, err = capsys.readouterr()
        assert "fracnet XXX " in out
        assert "test extending fracnet commands" in out, out

    def test_help_stages(self, capsys):
        returned = cmd_main(["help", "stages"])
        assert returned == 0
        out, err = capsys.readouterr()
        assert "Pipeline stages" in out
        assert "upscaling-check" in out
        assert "report.json" in out

    def test_help_cmd(self, capsys):
        returned = cmd_main(["help", "train"])
        assert returned == 0
        out, err = capsys.readouterr()
        assert "PURPOSE" in out
        assert "train the N_o, N_m and N_s surrogates" in out
        assert "--per-step" in out

    def test_help_plugin_cmd(self, capsys):
        plugin = {'XXX': 'tests.sample_plugin:MyCmd'}
        returned = cmd_main(["help", "XXX"], extra_config={'COMMAND': plugin})
        assert returned == 0
        out, err = capsys.readouterr()
        assert "my command description" in out

    def test_help_wrong_name(self, capsys):
        returned = cmd_main(["help", "XXX"])
        assert returned == 0
        out, err = capsys.readouterr()
        assert "fracnet run-example" in out

    def test_help_many_args(self, capsys):
        returned = cmd_main(["help", "train", "evaluate"])
        assert returned == 0
        out, err = capsys.readouterr()
        assert "Commands" in out
